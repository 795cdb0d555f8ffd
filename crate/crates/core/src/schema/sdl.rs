use std::collections::BTreeMap;

use super::lexer::{tokenize, LexError, Tok, Token, TokenStream};
use super::{
    builtin_endpoint_info, ArgDef, EndpointDef, FieldDef, SchemaError, TypeDef, TypeRef,
    UnifiedSchema, BUILTIN_SCALARS,
};

impl From<LexError> for SchemaError {
    fn from(e: LexError) -> Self {
        SchemaError::Syntax {
            line: e.line,
            col: e.col,
            message: e.message,
        }
    }
}

struct RawField {
    name: String,
    args: Vec<(String, TypeRef, usize, usize)>,
    ty: TypeRef,
    ty_pos: (usize, usize),
    description: Option<String>,
    line: usize,
    col: usize,
}

struct RawType {
    name: String,
    extend: bool,
    fields: Vec<RawField>,
    line: usize,
    col: usize,
}

fn syntax(t: &Token, message: impl Into<String>) -> SchemaError {
    SchemaError::Syntax {
        line: t.line,
        col: t.col,
        message: message.into(),
    }
}

fn expect_punct(ts: &mut TokenStream, c: char) -> Result<Token, SchemaError> {
    let t = ts.next();
    if t.tok == Tok::Punct(c) {
        Ok(t)
    } else {
        Err(syntax(&t, format!("expected `{c}`, found {}", t.tok)))
    }
}

fn expect_name(ts: &mut TokenStream, what: &str) -> Result<(String, Token), SchemaError> {
    let t = ts.next();
    match &t.tok {
        Tok::Name(n) => Ok((n.clone(), t.clone())),
        other => Err(syntax(&t, format!("expected {what}, found {other}"))),
    }
}

fn parse_type_ref(ts: &mut TokenStream) -> Result<TypeRef, SchemaError> {
    let t = ts.next();
    let base = match &t.tok {
        Tok::Name(n) => TypeRef::Named(n.clone()),
        Tok::Punct('[') => {
            let inner = parse_type_ref(ts)?;
            expect_punct(ts, ']')?;
            TypeRef::List(Box::new(inner))
        }
        other => return Err(syntax(&t, format!("expected type, found {other}"))),
    };
    if ts.at_punct('!') {
        ts.next();
        Ok(TypeRef::NonNull(Box::new(base)))
    } else {
        Ok(base)
    }
}

fn optional_description(ts: &mut TokenStream) -> Option<String> {
    if let Tok::Str(s) = &ts.peek().tok {
        let s = s.clone();
        ts.next();
        Some(s)
    } else {
        None
    }
}

fn parse_fields(ts: &mut TokenStream, allow_args: bool) -> Result<Vec<RawField>, SchemaError> {
    expect_punct(ts, '{')?;
    let mut fields = Vec::new();
    loop {
        let description = optional_description(ts);
        if ts.at_punct('}') && description.is_none() {
            let close = ts.next();
            if fields.is_empty() {
                return Err(syntax(&close, "expected at least one field definition"));
            }
            return Ok(fields);
        }
        let (name, name_tok) = expect_name(ts, "field name")?;
        let mut args = Vec::new();
        if ts.at_punct('(') {
            let open = ts.next();
            if !allow_args {
                return Err(syntax(&open, "field arguments are only supported on Query"));
            }
            while !ts.at_punct(')') {
                optional_description(ts);
                let (arg, arg_tok) = expect_name(ts, "argument name")?;
                expect_punct(ts, ':')?;
                let ty = parse_type_ref(ts)?;
                if ts.at_punct('=') {
                    return Err(syntax(ts.peek(), "argument default values are not supported"));
                }
                args.push((arg, ty, arg_tok.line, arg_tok.col));
            }
            let close = ts.next();
            if args.is_empty() {
                return Err(syntax(&close, "empty argument list"));
            }
        }
        expect_punct(ts, ':')?;
        let ty_tok = ts.peek().clone();
        let ty = parse_type_ref(ts)?;
        if ts.at_punct('@') {
            return Err(syntax(ts.peek(), "directives are not supported"));
        }
        fields.push(RawField {
            name,
            args,
            ty,
            ty_pos: (ty_tok.line, ty_tok.col),
            description,
            line: name_tok.line,
            col: name_tok.col,
        });
    }
}

/// Parses schema-definition text into a [`UnifiedSchema`].
///
/// Every `Query` field (including `extend type Query` blocks) becomes an
/// endpoint; all other object types become [`TypeDef`]s. Type references
/// must resolve to a declared object type or scalar.
pub fn parse_schema(sdl_text: &str) -> Result<UnifiedSchema, SchemaError> {
    let mut ts = TokenStream::new(tokenize(sdl_text)?);
    let mut raw_types: Vec<RawType> = Vec::new();
    let mut scalars: Vec<(String, usize, usize)> = Vec::new();

    loop {
        let _description = optional_description(&mut ts);
        let t = ts.next();
        match &t.tok {
            Tok::Eof => break,
            Tok::Name(kw) if kw == "type" || kw == "extend" => {
                let extend = kw == "extend";
                if extend {
                    let (kw2, kw_tok) = expect_name(&mut ts, "`type`")?;
                    if kw2 != "type" {
                        return Err(syntax(&kw_tok, "only `extend type` is supported"));
                    }
                }
                let (name, name_tok) = expect_name(&mut ts, "type name")?;
                if ts.at_name("implements") || ts.at_punct('@') {
                    return Err(syntax(ts.peek(), "interfaces and directives are not supported"));
                }
                let fields = parse_fields(&mut ts, name == "Query")?;
                raw_types.push(RawType {
                    name,
                    extend,
                    fields,
                    line: name_tok.line,
                    col: name_tok.col,
                });
            }
            Tok::Name(kw) if kw == "scalar" => {
                let (name, name_tok) = expect_name(&mut ts, "scalar name")?;
                scalars.push((name, name_tok.line, name_tok.col));
            }
            Tok::Name(kw) => {
                return Err(syntax(&t, format!("unsupported definition `{kw}`")));
            }
            other => return Err(syntax(&t, format!("expected definition, found {other}"))),
        }
    }
    let eof = ts.peek().clone();

    // Merge base definitions with their extensions, rejecting duplicates.
    let mut order: Vec<String> = Vec::new();
    let mut merged: BTreeMap<String, Vec<RawField>> = BTreeMap::new();
    let mut scalar_names: Vec<String> = Vec::new();
    for (name, line, col) in scalars {
        if BUILTIN_SCALARS.contains(&name.as_str()) || scalar_names.contains(&name) {
            return Err(SchemaError::DuplicateDefinition { name, line, col });
        }
        scalar_names.push(name);
    }
    let mut extensions = Vec::new();
    for rt in raw_types {
        if rt.extend {
            extensions.push(rt);
            continue;
        }
        if merged.contains_key(&rt.name) || scalar_names.contains(&rt.name) || BUILTIN_SCALARS.contains(&rt.name.as_str()) {
            return Err(SchemaError::DuplicateDefinition {
                name: rt.name,
                line: rt.line,
                col: rt.col,
            });
        }
        order.push(rt.name.clone());
        merged.insert(rt.name, rt.fields);
    }
    for ext in extensions {
        let Some(fields) = merged.get_mut(&ext.name) else {
            return Err(SchemaError::UndefinedType {
                name: ext.name,
                line: ext.line,
                col: ext.col,
            });
        };
        fields.extend(ext.fields);
    }
    for fields in merged.values() {
        for (i, f) in fields.iter().enumerate() {
            if fields[..i].iter().any(|g| g.name == f.name) {
                return Err(SchemaError::DuplicateDefinition {
                    name: f.name.clone(),
                    line: f.line,
                    col: f.col,
                });
            }
            for (j, (arg, _, line, col)) in f.args.iter().enumerate() {
                if f.args[..j].iter().any(|a| &a.0 == arg) {
                    return Err(SchemaError::DuplicateDefinition {
                        name: format!("{}.{}", f.name, arg),
                        line: *line,
                        col: *col,
                    });
                }
            }
        }
    }

    if !merged.contains_key("Query") {
        return Err(SchemaError::Syntax {
            line: eof.line,
            col: eof.col,
            message: "schema declares no Query type".into(),
        });
    }

    let resolvable = |name: &str| {
        BUILTIN_SCALARS.contains(&name)
            || scalar_names.iter().any(|s| s == name)
            || (name != "Query" && merged.contains_key(name))
    };
    for fields in merged.values() {
        for f in fields {
            if !resolvable(f.ty.base_name()) {
                return Err(SchemaError::UndefinedType {
                    name: f.ty.base_name().to_string(),
                    line: f.ty_pos.0,
                    col: f.ty_pos.1,
                });
            }
            for (_, ty, line, col) in &f.args {
                let base = ty.base_name();
                // arguments must be scalar-typed
                if !(BUILTIN_SCALARS.contains(&base) || scalar_names.iter().any(|s| s == base)) {
                    return Err(SchemaError::UndefinedType {
                        name: base.to_string(),
                        line: *line,
                        col: *col,
                    });
                }
            }
        }
    }

    let mut query_fields = merged.remove("Query").unwrap_or_default();
    let query_endpoints = query_fields
        .drain(..)
        .map(|f| {
            let (vendor, builtin_desc) = builtin_endpoint_info(&f.name);
            EndpointDef {
                args: f
                    .args
                    .into_iter()
                    .map(|(name, ty, _, _)| ArgDef { name, ty })
                    .collect(),
                return_type: f.ty,
                source_vendor: vendor,
                description: f.description.unwrap_or_else(|| builtin_desc.to_string()),
                name: f.name,
            }
        })
        .collect();
    let types = order
        .into_iter()
        .filter(|n| n != "Query")
        .map(|name| {
            let fields = merged
                .remove(&name)
                .unwrap_or_default()
                .into_iter()
                .map(|f| FieldDef {
                    name: f.name,
                    ty: f.ty,
                    description: f.description,
                })
                .collect();
            TypeDef { name, fields }
        })
        .collect();

    Ok(UnifiedSchema {
        types,
        scalars: scalar_names,
        query_endpoints,
        alias_table: BTreeMap::new(),
    })
}
